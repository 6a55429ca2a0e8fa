import copy

from TrustQN.exceptions import ConfigTypeError, ConfigValueError


class ConfigAttribute:
    types = {
        "str": (str,),
        "int": (int,),
        "float": (int, float),
        "bool": (bool,),
        "list": (list,),
        "dict": (dict,),
    }
    defaults = {
        "str": '',
        "int": 0,
        "float": 0.0,
        "bool": False,
        "list": [],
        "dict": {},
    }

    @classmethod
    def matches_type(cls, value, data_type):
        """
        The function `matches_type` checks a JSON value against one of the supported attribute types.
        Booleans never count as numbers, and integers are accepted where a float is expected.

        :param value: The `value` parameter is the value to check
        :param data_type: The `data_type` parameter is one of the keys of `ConfigAttribute.types`
        :return: True when the value has the expected type.
        """
        if isinstance(value, bool) and data_type != "bool":
            return False
        return isinstance(value, cls.types[data_type])

    def _initialize_defaults(self):
        """
        The function `_initialize_defaults` returns the default value for the attribute, falling back to
        the per-type default when none was given and the attribute is not nullable.
        :return: a fresh copy of the default so mutable defaults are never shared.
        """
        if self.__attribute_default is None:
            if self.__attribute_nullable:
                return None
            return copy.deepcopy(ConfigAttribute.defaults[self.__attribute_type])
        return copy.deepcopy(self.__attribute_default)

    def _verify_type(self):
        """
        The function verifies if the attribute type is supported and raises an error if it is not.
        """
        if self.__attribute_type not in ConfigAttribute.types:
            raise ConfigTypeError(
                f"Attribute type {self.__attribute_type} is not supported. Supported types are {', '.join(ConfigAttribute.types.keys())}")

    def _verify_defaults(self):
        """
        The function `_verify_defaults` checks if the default value of an attribute is of the correct
        type.
        """
        if self.__attribute_default is not None:
            if not ConfigAttribute.matches_type(self.__attribute_default, self.__attribute_type):
                raise ConfigValueError(
                    f"Default value {self.__attribute_default} is not of type {self.__attribute_type}"
                )

    def __init__(self, attribute_name, data_type, attribute_default=None, attribute_required=False,
                 attribute_nullable=False, attribute_validator=None, attribute_description=''):
        """
        The function is an initializer for one configuration key.

        :param attribute_name: The attribute_name parameter is the JSON key the attribute is read from
        :param data_type: The `data_type` parameter is the expected JSON type: "str", "int", "float",
        "bool", "list" or "dict"
        :param attribute_default: The attribute_default parameter is used when the key is absent from the
        configuration document
        :param attribute_required: The attribute_required parameter marks keys that have no sensible
        default and must be present, defaults to False (optional)
        :param attribute_nullable: The attribute_nullable parameter allows an explicit null, which then
        also becomes the default, defaults to False (optional)
        :param attribute_validator: The attribute_validator parameter is a function taking the value and
        returning True when it is acceptable
        :param attribute_description: The attribute_description parameter is a one-line help text
        """
        self.__attribute_name = attribute_name
        self.__attribute_type = data_type
        self._verify_type()
        self.__attribute_default = attribute_default
        self._verify_defaults()
        self.__attribute_required = attribute_required
        self.__attribute_nullable = attribute_nullable
        self.__attribute_validator = attribute_validator
        self.__attribute_description = attribute_description

    def get_attribute_name(self):
        return self.__attribute_name

    def get_attribute_type(self):
        return self.__attribute_type

    def get_attribute_default(self):
        """
        The function returns the default of the attribute.
        :return: a copy of the configured default, or the per-type default.
        """
        return self._initialize_defaults()

    def is_attribute_required(self):
        return self.__attribute_required

    def is_attribute_nullable(self):
        return self.__attribute_nullable

    def get_attribute_validator(self):
        return self.__attribute_validator

    def check_value(self, value):
        """
        The function `check_value` classifies a configuration value.

        :param value: The `value` parameter is the value read for this attribute
        :return: None when the value is acceptable, "type" on a type mismatch and "validation" when the
        validator rejects it.
        """
        if value is None:
            return None if self.__attribute_nullable else "type"
        if not ConfigAttribute.matches_type(value, self.__attribute_type):
            return "type"
        if self.__attribute_validator is not None and not self.__attribute_validator(value):
            return "validation"
        return None

    def get_attribute_info(self):
        """
        The function `get_attribute_info` returns a dictionary containing information about an attribute.
        :return: A dictionary containing information about an attribute.
        """
        return {
            "name": self.__attribute_name,
            "type": self.__attribute_type,
            "default": self.__attribute_default,
            "required": self.__attribute_required,
            "nullable": self.__attribute_nullable,
            "description": self.__attribute_description,
        }
